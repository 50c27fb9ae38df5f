#include "commands.hpp"

int main(int argc, char** argv) { return timeemb::cli::run(argc, argv); }
