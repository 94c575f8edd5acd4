fn main() {
    std::process::exit(shiftqp::cli::main_with(std::env::args_os()));
}
