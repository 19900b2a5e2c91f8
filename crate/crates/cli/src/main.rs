fn main() {
    std::process::exit(degenhyp::main_with_args(std::env::args_os()));
}
