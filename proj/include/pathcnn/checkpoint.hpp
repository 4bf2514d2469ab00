#pragma once

#include <string>

#include "pathcnn/network.hpp"

namespace pathcnn {

// Binary network snapshot: magic, format version, the NetworkSpec, a free
// form config echo string, every trainable tensor (shape-checked on load),
// the batchnorm running statistics, and a trailing checksum. Values round
// trip bit-exactly.
void save_checkpoint(const std::string& path, Network& net, const std::string& config_echo);

// Rebuilds the network from the stored spec and restores all state. Throws
// FormatError on bad magic, unsupported version, shape mismatch, truncation
// or checksum failure.
Network load_checkpoint(const std::string& path, std::string* config_echo = nullptr);

}  // namespace pathcnn
