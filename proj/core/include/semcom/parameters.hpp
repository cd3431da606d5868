#pragma once

#include <string>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

struct NamedParameter {
  std::string name;
  Tensor value;
};

using ParameterList = std::vector<NamedParameter>;

inline std::size_t total_size(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.numel();
  return n;
}

inline std::vector<Tensor> tensors_of(const ParameterList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

}  // namespace semcom
