fn main() {
    std::process::exit(gerbecalc::cli::main());
}
