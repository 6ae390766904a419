fn main() {
    std::process::exit(unisoft_lab::cli::main());
}
