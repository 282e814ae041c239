fn main() {
    std::process::exit(multicens::cli::main_with(std::env::args_os()));
}
