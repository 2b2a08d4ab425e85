#include "mrabgcn/cli.hpp"

int main(int argc, char** argv) { return mrabgcn::dispatch(argc, argv); }
