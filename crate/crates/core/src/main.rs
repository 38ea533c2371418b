fn main() {
    std::process::exit(cmp_abc::cli::main_with(std::env::args_os()));
}
