#pragma once

#include <stdexcept>
#include <string>

namespace critbatch {

enum class Method { sgd, momentum, adam };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::sgd: return "sgd";
        case Method::momentum: return "momentum";
        case Method::adam: return "adam";
    }
    return "?";
}

inline Method method_from_name(const std::string& s) {
    if (s == "sgd") return Method::sgd;
    if (s == "momentum") return Method::momentum;
    if (s == "adam") return Method::adam;
    throw std::invalid_argument("unknown method: " + s);
}

}  // namespace critbatch
