fn main() {
    std::process::exit(fixlab::cli::main_with(std::env::args_os()));
}
