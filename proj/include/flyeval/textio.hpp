// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

// Small helpers shared by the text artifact formats.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace flyeval::textio {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
// Accepts everything format_double emits, including nan/inf. Throws DataError.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string_view> split_ws(std::string_view line);

// Percent-escapes whitespace, '%' and '=' so a value survives split_ws.
std::string escape(std::string_view s);
std::string unescape(std::string_view s);

std::uint64_t fnv1a64(std::string_view data) noexcept;
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace flyeval::textio
