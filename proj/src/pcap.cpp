#include <fstream>

#include "softics/error.hpp"
#include "softics/fabric.hpp"

namespace softics::net {
namespace {

void put_le32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  out.write(b, 4);
}

void put_le16(std::ofstream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

}  // namespace

void export_pcap(const Capture& capture, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write pcap file " + path.string());
  put_le32(out, 0xa1b2c3d4);
  put_le16(out, 2);
  put_le16(out, 4);
  put_le32(out, 0);       // thiszone
  put_le32(out, 0);       // sigfigs
  put_le32(out, 65535);   // snaplen
  put_le32(out, 1);       // Ethernet
  for (const auto& rec : capture) {
    const auto us = rec.time.count();
    put_le32(out, static_cast<std::uint32_t>(us / 1000000));
    put_le32(out, static_cast<std::uint32_t>(us % 1000000));
    put_le32(out, static_cast<std::uint32_t>(rec.bytes.size()));
    put_le32(out, static_cast<std::uint32_t>(rec.bytes.size()));
    out.write(reinterpret_cast<const char*>(rec.bytes.data()), static_cast<std::streamsize>(rec.bytes.size()));
  }
  if (!out) throw IoError("error writing pcap file " + path.string());
}

}  // namespace softics::net
