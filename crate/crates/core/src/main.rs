fn main() {
    std::process::exit(star_fusion::cli::main_with_args(std::env::args_os()));
}
