#pragma once

#include <string>
#include <vector>

namespace pathcnn {

extern const char* kArtifactVersion;

// Full command dispatcher. Returns the process exit code: 0 success,
// 1 runtime failure (single-line error on stderr), 2 usage error.
int dispatch(int argc, const char* const* argv);
// args[0] is the program name.
int dispatch(const std::vector<std::string>& args);

}  // namespace pathcnn
