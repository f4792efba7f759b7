#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "bls/session.hpp"

namespace bls {

inline constexpr int kSessionLogSchema = 1;

// Session log file: JSON Lines. Line 1 is the header record; then the journal in order;
// then one "outcome" record per task and a closing "summary" record. The sensor trace
// lives next to the log as raw SMP lines (`<log>.trace`).
std::vector<std::string> log_lines(const SessionLog& log, const std::string& trace_ref);

std::string config_hash(const SessionHeader& header);

// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a64(std::string_view data);

// Writes `path` and `path + ".trace"`. Throws Error(Io).
void write_log(const SessionLog& log, const std::string& path);

struct LoadedLog {
  SessionLog log;
  std::vector<std::string> raw_lines;  // without trailing newline
  std::string trace_ref;
};

// Throws Error(SchemaMismatch) for foreign or older schemas, Error(Io) for missing files.
LoadedLog read_log(const std::string& path);
SessionLog parse_log(const std::vector<std::string>& lines, std::vector<std::string> trace);

// Re-runs the engine over a log's inputs. Throws on inconsistent inputs.
SessionLog regenerate(const SessionLog& stored);

struct ReplayVerdict {
  bool identical = false;
  std::size_t mismatch_line = 0;  // 1-based; 0 when identical
  std::string expected;
  std::string actual;
};

ReplayVerdict replay(const LoadedLog& loaded);

std::vector<std::string> read_trace(const std::string& path);

}  // namespace bls
