// Copyright 2026 The dkrc authors
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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dkrc {

std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::string base64_encode_doubles(const std::vector<double>& values);
std::vector<double> base64_decode_doubles(const std::string& text);

// FNV-1a 64-bit, hex string; used as the config fingerprint embedded in
// every artifact.
std::string fnv1a_hex(const std::string& text);

// Shortest exact decimal for a double ("%.17g"); round-trips bit-exactly
// and keeps reruns byte-identical.
std::string fmt_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

// CSV matrix with no header, fmt_double cells; optional leading
// "# key=value" comment lines.
void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& m,
                      const std::vector<std::string>& comments = {});
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// 8-bit ASCII PGM (P2); pixels in [0,1] scaled to 0..255.
void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& pixels,
               const std::vector<std::string>& comments = {});

}  // namespace dkrc
