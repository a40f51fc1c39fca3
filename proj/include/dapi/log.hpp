/*
 Copyright 2026 DAPI Toolkit Contributors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

namespace dapi::log {

enum class Level : int { error = 0, info = 1, debug = 2 };

/// Level read from the DAPI_LOG environment variable (error|info|debug).
/// Unset or unrecognized values fall back to info.
inline Level level() {
    static const Level lvl = [] {
        const char* env = std::getenv("DAPI_LOG");
        if (env == nullptr) return Level::info;
        if (std::strcmp(env, "error") == 0) return Level::error;
        if (std::strcmp(env, "debug") == 0) return Level::debug;
        return Level::info;
    }();
    return lvl;
}

inline void error(const std::string& msg) {
    std::cerr << "[dapi error] " << msg << "\n";
}

inline void info(const std::string& msg) {
    if (level() >= Level::info) std::cerr << "[dapi] " << msg << "\n";
}

inline void debug(const std::string& msg) {
    if (level() >= Level::debug) std::cerr << "[dapi debug] " << msg << "\n";
}

} // namespace dapi::log
