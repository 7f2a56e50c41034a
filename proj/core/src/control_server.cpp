#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>
#include <thread>
#include <vector>

#include "flip/control.hpp"
#include "flip/errors.hpp"

namespace flip {

namespace {

using json = nlohmann::json;

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  int get() const noexcept { return fd_; }

 private:
  int fd_;
};

sockaddr_un address_of(const std::filesystem::path& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  const auto s = path.string();
  if (s.size() >= sizeof addr.sun_path) throw IoError("socket path too long: '" + s + "'");
  std::memcpy(addr.sun_path, s.c_str(), s.size() + 1);
  return addr;
}

bool write_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

CommandResult handle(Session& session, const std::string& line) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception& e) {
    return CommandResult::failure("ParseError", e.what());
  }
  if (request.is_object() && request.contains("line") && request.at("line").is_string()) {
    return session.execute_line(request.at("line").get<std::string>());
  }
  try {
    return session.execute(Command::from_json(request));
  } catch (const Error& e) {
    return CommandResult::failure(e.code(), e.what());
  }
}

void serve_client(Session& session, Fd client, const std::atomic<bool>& stop) {
  std::string buffer;
  char chunk[4096];
  while (!stop.load()) {
    pollfd pfd{client.get(), POLLIN, 0};
    int ready = ::poll(&pfd, 1, 100);
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    auto n = ::recv(client.get(), chunk, sizeof chunk, 0);
    if (n <= 0) return;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      auto line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto reply = handle(session, line).to_json().dump() + "\n";
      if (!write_all(client.get(), reply)) return;
    }
  }
}

}  // namespace

void serve(Session& session, const std::filesystem::path& socket_path, const std::atomic<bool>& stop) {
  Fd listener(::socket(AF_UNIX, SOCK_STREAM, 0));
  if (listener.get() < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  std::error_code ec;
  std::filesystem::remove(socket_path, ec);
  auto addr = address_of(socket_path);
  if (::bind(listener.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    throw IoError("bind '" + socket_path.string() + "': " + std::strerror(errno));
  }
  if (::listen(listener.get(), 16) < 0) throw IoError(std::string("listen: ") + std::strerror(errno));

  std::vector<std::thread> clients;
  while (!stop.load()) {
    pollfd pfd{listener.get(), POLLIN, 0};
    int ready = ::poll(&pfd, 1, 100);
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    int fd = ::accept(listener.get(), nullptr, nullptr);
    if (fd < 0) continue;
    clients.emplace_back(serve_client, std::ref(session), Fd(fd), std::cref(stop));
  }
  for (auto& t : clients) t.join();
  std::filesystem::remove(socket_path, ec);
}

json send_request(const std::filesystem::path& socket_path, const json& request) {
  Fd fd(::socket(AF_UNIX, SOCK_STREAM, 0));
  if (fd.get() < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  auto addr = address_of(socket_path);
  if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    throw IoError("connect '" + socket_path.string() + "': " + std::strerror(errno));
  }
  if (!write_all(fd.get(), request.dump() + "\n")) throw IoError("send failed");
  std::string buffer;
  char chunk[4096];
  while (buffer.find('\n') == std::string::npos) {
    auto n = ::recv(fd.get(), chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw IoError("connection closed before a reply");
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
  try {
    return json::parse(buffer.substr(0, buffer.find('\n')));
  } catch (const json::exception& e) {
    throw ParseError(std::string("reply: ") + e.what());
  }
}

}  // namespace flip
