#include "zcae/tensor.hpp"

namespace zcae {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

std::string FilterShape::str() const {
  return "(" + std::to_string(k) + "," + std::to_string(c) + "," + std::to_string(kh) + "," +
         std::to_string(kw) + ")";
}

}  // namespace zcae
