fn main() {
    std::process::exit(actdiag::cli::main(std::env::args_os()));
}
