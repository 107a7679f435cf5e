// Copyright 2026 The MTMN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MTMN_INSPECT_HPP_
#define MTMN_INSPECT_HPP_

#include <cstdio>
#include <string>
#include <vector>

#include "mtmn/model.hpp"

namespace mtmn {

/// Renders the attention weights of one decoded sentence, one line per token
/// in the form "j: token (0.xx)", grouped by layer, category and channel,
/// plus the per-layer task similarity matrices.
inline std::string format_attention_dump(const ForwardTrace& trace, const Sentence& sentence,
                                         const std::vector<std::string>& categories) {
  char buf[256];
  std::string out = "# sentence " + sentence.id + "\n# tokens:";
  for (const auto& t : sentence.tokens) out += " " + t;
  out += "\n";
  for (std::size_t layer = 0; layer < trace.layers.size(); ++layer) {
    const LayerState& state = trace.layers[layer];
    for (int channel = 0; channel < 2; ++channel) {
      const Var& similarity = channel == 0 ? state.similarity_a : state.similarity_p;
      if (!similarity) continue;
      out += "layer " + std::to_string(layer + 1) + " similarity " +
             (channel == 0 ? "aspect" : "opinion") + "\n";
      for (std::size_t r = 0; r < categories.size(); ++r) {
        out += " ";
        for (std::size_t c = 0; c < categories.size(); ++c) {
          std::snprintf(buf, sizeof(buf), " %.4f", similarity->value.at2(r, c));
          out += buf;
        }
        out += "\n";
      }
    }
    for (std::size_t c = 0; c < categories.size(); ++c) {
      for (int channel = 0; channel < 2; ++channel) {
        const ChannelState& cs = channel == 0 ? state.aspect[c] : state.opinion[c];
        out += "layer " + std::to_string(layer + 1) + " category " + categories[c] + " " +
               (channel == 0 ? "aspect" : "opinion") + "\n";
        for (std::size_t j = 0; j < sentence.tokens.size(); ++j) {
          std::snprintf(buf, sizeof(buf), "  %zu: %s (%.2f)\n", j + 1,
                        sentence.tokens[j].c_str(), cs.attention->value[j]);
          out += buf;
        }
      }
    }
  }
  return out;
}

}  // namespace mtmn

#endif  // MTMN_INSPECT_HPP_
