fn main() {
    std::process::exit(sps::cli::main());
}
