fn main() {
    std::process::exit(debpbo::cli::main_stdio());
}
