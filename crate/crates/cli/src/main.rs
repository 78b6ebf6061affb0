fn main() {
    std::process::exit(fdsl_cli::run(std::env::args_os()));
}
