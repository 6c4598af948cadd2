// core/include/reprogsv/checkpoint.h

// Copyright (c) 2026 The reprogsv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REPROGSV_CHECKPOINT_H_
#define REPROGSV_CHECKPOINT_H_

#include <filesystem>
#include <map>
#include <string>

#include "reprogsv/tensor.h"

namespace reprogsv {

// Versioned binary container: string metadata plus named double tensors,
// written little-endian with raw IEEE-754 payloads so round trips are
// bit-exact. Maps keep entries ordered, so identical content produces
// identical bytes.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor> tensors;

  const std::string& require_meta(const std::string& key) const;
  const Tensor& require_tensor(const std::string& key) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Round-trip-exact double formatting for metadata values.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace reprogsv

#endif  // REPROGSV_CHECKPOINT_H_
