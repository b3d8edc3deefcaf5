fn main() {
    std::process::exit(dualview_cli::commands::main_entry(std::env::args_os()));
}
