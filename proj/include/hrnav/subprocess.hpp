#pragma once

#include <optional>
#include <string>

namespace hrnav {

/// Child process (`/bin/sh -c command`) exchanging newline-terminated lines
/// over its stdin/stdout. stderr is inherited.
class LineProcess {
 public:
  explicit LineProcess(const std::string& command);
  ~LineProcess();

  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  enum class ReadStatus { Line, Timeout, Eof };

  struct ReadResult {
    ReadStatus status = ReadStatus::Eof;
    std::string line;
  };

  /// Returns false when the child has closed its input.
  bool write_line(const std::string& line);
  ReadResult read_line(double timeout_ms);
  bool running();

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

}  // namespace hrnav
