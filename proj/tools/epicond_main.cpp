#include "epicond/io.hpp"

int main(int argc, char** argv) { return epicond::cli_dispatch(argc, argv); }
