fn main() {
    std::process::exit(mirrorfix_core::cli::run(std::env::args_os()));
}
