// Copyright 2026 The ASMix Authors. All Rights Reserved.
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

#pragma once

// JSON (de)serialization of configuration structs, shared by checkpoint
// headers and run configs.

#include "json.hpp"

#include "asmix/audio.hpp"
#include "asmix/mixer.hpp"

namespace asmix {

using Json = nlohmann::ordered_json;

Json to_json(const MixerConfig& cfg);
/// Missing keys keep their defaults. Unknown keys and bad values raise
/// ConfigError with the field path prefixed by `where`.
MixerConfig mixer_config_from_json(const Json& j, const std::string& where = "model");

Json to_json(const FrontendConfig& cfg);
FrontendConfig frontend_config_from_json(const Json& j,
                                         const std::string& where = "frontend");

}  // namespace asmix
