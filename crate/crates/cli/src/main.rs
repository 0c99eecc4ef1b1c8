fn main() {
    std::process::exit(sdpsi_cli::main_with_args(std::env::args_os()));
}
