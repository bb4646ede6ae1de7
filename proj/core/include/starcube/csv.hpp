#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace starcube::csv {

struct Record {
  std::vector<std::string> fields;
  int line = 0;  // physical line the record starts on, 1-based
};

// RFC-4180 reader over an in-memory buffer. Quoted fields may contain the
// delimiter, doubled quotes and line breaks; CRLF and LF are both accepted.
class Reader {
 public:
  explicit Reader(std::string_view content, char delimiter = ',');

  bool next(Record& out);

 private:
  std::string_view buf_;
  std::size_t pos_ = 0;
  int line_ = 1;
  char delim_;
};

std::vector<Record> parse_all(std::string_view content, char delimiter = ',');

std::string escape(std::string_view field, char delimiter = ',');
std::string join(const std::vector<std::string>& fields, char delimiter = ',');

bool is_valid_utf8(std::string_view s);

// Reads a whole file. Throws SourceNotFound if missing, IoError otherwise.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace starcube::csv
