// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "hierdoc/heads.hpp"

namespace hierdoc::heads {

/// Checkpoint layout:
///   "HDCKPT\0\1" | u64 header length | header JSON | float32 LE tensors
/// The header carries the model name, input_dim, num_classes, the layer
/// specs and the name and shape of every tensor, listed in the order the
/// payload stores them (HeadModel::state_tensors()).
template <typename T>
std::string serialize_checkpoint(HeadModel<T>& model);

template <typename T>
HeadModel<T> deserialize_checkpoint(const std::string& bytes);

template <typename T>
void save_checkpoint(HeadModel<T>& model, const std::string& path);

template <typename T>
HeadModel<T> load_checkpoint(const std::string& path);

/// Copies every state tensor of `from` into `to` (same architecture).
template <typename T>
void copy_state(HeadModel<T>& from, HeadModel<T>& to);

}  // namespace hierdoc::heads
