fn main() {
    std::process::exit(pnp::cli::main_with(std::env::args_os()));
}
