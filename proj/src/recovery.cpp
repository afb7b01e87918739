#include "fbdet/recovery.hpp"

#include <algorithm>

namespace fbdet {

void FileStore::create_file(std::uint32_t file_id, std::vector<std::uint8_t> content) {
  if (content.empty()) throw RecoveryError("file content must be non-empty");
  if (!base_.emplace(file_id, std::move(content)).second)
    throw RecoveryError("file " + std::to_string(file_id) + " already exists");
}

bool FileStore::has_file(std::uint32_t file_id) const { return base_.count(file_id) > 0; }

std::uint64_t FileStore::file_size(std::uint32_t file_id) const {
  return base_or_throw(file_id).size();
}

const std::vector<std::uint8_t>& FileStore::base_or_throw(std::uint32_t file_id) const {
  auto it = base_.find(file_id);
  if (it == base_.end())
    throw RecoveryError("unknown file " + std::to_string(file_id));
  return it->second;
}

void FileStore::stage_write(std::uint32_t file_id, std::uint64_t offset,
                            std::span<const std::uint8_t> bytes) {
  const auto& base = base_or_throw(file_id);
  if (bytes.empty()) throw RecoveryError("empty write");
  if (offset > base.size() || bytes.size() > base.size() - offset)
    throw RecoveryError("write out of bounds");
  staged_[file_id].push_back({offset, {bytes.begin(), bytes.end()}});
}

std::vector<std::uint8_t> FileStore::read_view(std::uint32_t file_id, std::uint64_t offset,
                                               std::uint64_t len) const {
  const auto& base = base_or_throw(file_id);
  if (offset > base.size() || len > base.size() - offset)
    throw RecoveryError("read out of bounds");
  std::vector<std::uint8_t> view(base.begin() + offset, base.begin() + offset + len);
  auto it = staged_.find(file_id);
  if (it == staged_.end()) return view;
  for (const StagedWrite& w : it->second) {
    const std::uint64_t lo = std::max(w.offset, offset);
    const std::uint64_t hi = std::min(w.offset + w.bytes.size(), offset + len);
    for (std::uint64_t i = lo; i < hi; ++i) view[i - offset] = w.bytes[i - w.offset];
  }
  return view;
}

void FileStore::commit_window(std::uint32_t file_id, BinaryClass verdict) {
  base_or_throw(file_id);
  auto& base = base_.at(file_id);
  auto it = staged_.find(file_id);
  if (it == staged_.end()) return;
  if (verdict == BinaryClass::Benign) {
    for (const StagedWrite& w : it->second)
      std::copy(w.bytes.begin(), w.bytes.end(), base.begin() + w.offset);
  }
  staged_.erase(it);
}

const std::vector<std::uint8_t>& FileStore::base_content(std::uint32_t file_id) const {
  return base_or_throw(file_id);
}

std::size_t FileStore::staged_count(std::uint32_t file_id) const {
  auto it = staged_.find(file_id);
  return it == staged_.end() ? 0 : it->second.size();
}

}  // namespace fbdet
