fn main() {
    std::process::exit(raftform_cli::main_with(std::env::args_os()));
}
