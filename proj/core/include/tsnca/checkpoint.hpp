#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "tsnca/adam.hpp"
#include "tsnca/nn.hpp"

namespace tsnca {

// Binary tensor container shared by network checkpoints and feature
// extractor weights. All integers are 64-bit little-endian, all values
// 32-bit little-endian IEEE-754:
//
//   "TSNCAv01"
//   fingerprint: u64 length, bytes
//   u64 tensor count, then per tensor:
//     u64 name length, UTF-8 name, u64 rank, rank x u64 extents, values
//   u64 optimizer tensor count (0 when absent), tensors as above
//   u64 training step
struct Checkpoint {
  std::string fingerprint;
  NamedTensors<float> tensors;
  // Adam moments named "m/<param>" and "v/<param>".
  NamedTensors<float> optimizer;
  std::uint64_t step = 0;
};

inline constexpr char kCheckpointMagic[9] = "TSNCAv01";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FingerprintMismatch : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const nn::NetworkParams<float>& params, const Adam<float>* optimizer,
                           std::uint64_t step);

// Throws FingerprintMismatch unless the checkpoint was produced by `expected`.
nn::NetworkParams<float> params_from_checkpoint(const Checkpoint& ckpt,
                                                const nn::UNetConfig& expected,
                                                bool requires_grad = false);

// Architecture recorded in the checkpoint header.
nn::UNetConfig config_from_checkpoint(const Checkpoint& ckpt);

// Restores Adam moments for the optimizer's parameter set; no-op when the
// checkpoint carries no optimizer section.
void restore_optimizer(const Checkpoint& ckpt, Adam<float>& optimizer);

}  // namespace tsnca
