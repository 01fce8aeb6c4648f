#pragma once

#include <cstdint>
#include <string>

#include "core/types.hpp"
#include "vem/fit.hpp"

namespace bicmix::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  vem::FitProgress progress;
  Hyperparameters hyper;
  vem::FitConfig config;
  std::string data_digest;  // data_fingerprint of the matrix being fitted
};

// Hash over shape, ids and raw values; resumption refuses a different matrix.
std::string data_fingerprint(const DataMatrix& data);

std::string encode_checkpoint(const Checkpoint& cp);
// DataError on bad magic, version mismatch, truncation or checksum failure.
// Nothing is returned unless the whole container validates.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace bicmix::io
