fn main() {
    std::process::exit(kingman::app::main_with_args(std::env::args_os()));
}
