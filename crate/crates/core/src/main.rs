fn main() {
    std::process::exit(invertkit::cli::main_with(std::env::args_os()));
}
