fn main() {
    std::process::exit(jch::cli::main());
}
