fn main() {
    std::process::exit(kernreg::cli::run(std::env::args_os()));
}
