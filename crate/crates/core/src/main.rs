fn main() {
    std::process::exit(vitalink::cli::main_entry());
}
