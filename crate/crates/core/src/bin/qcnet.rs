fn main() {
    std::process::exit(qcnet::cli::run());
}
