#include "pathcnn/cli.hpp"

int main(int argc, char** argv) { return pathcnn::dispatch(argc, argv); }
