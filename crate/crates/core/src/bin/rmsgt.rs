fn main() {
    std::process::exit(rmsgt::cli::main());
}
