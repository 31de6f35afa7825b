fn main() {
    std::process::exit(cogen_cli::run(std::env::args_os()));
}
