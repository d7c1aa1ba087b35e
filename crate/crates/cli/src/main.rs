fn main() {
    std::process::exit(np_cli::run(std::env::args_os()));
}
