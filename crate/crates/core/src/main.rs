fn main() {
    std::process::exit(qframes::cli::main_from(std::env::args_os()));
}
