// Copyright 2026 The Annocycle Authors.
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

#ifndef ANNOCYCLE_TIMESTAMP_H_
#define ANNOCYCLE_TIMESTAMP_H_

#include <chrono>
#include <string>
#include <string_view>

namespace annocycle {

// UTC instant with millisecond resolution.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// "2026-10-15T08:30:00.250Z"
std::string format_timestamp(Timestamp t);

// Accepts "YYYY-MM-DDTHH:MM:SS[.fff]Z". Throws ParseError otherwise.
Timestamp parse_timestamp(std::string_view text);

Timestamp now_utc();

}  // namespace annocycle

#endif  // ANNOCYCLE_TIMESTAMP_H_
