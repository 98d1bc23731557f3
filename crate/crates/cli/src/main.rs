fn main() {
    std::process::exit(lunar_cli::run(std::env::args_os()));
}
