fn main() {
    std::process::exit(curvkit::cli::main_with_args(std::env::args_os()));
}
