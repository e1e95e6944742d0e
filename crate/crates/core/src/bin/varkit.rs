fn main() {
    std::process::exit(varkit::cli::main_with(std::env::args_os()));
}
