fn main() {
    std::process::exit(flatdeg::cli_main());
}
