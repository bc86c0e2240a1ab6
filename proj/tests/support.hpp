#pragma once

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace molbench::testing {

struct CorpusEntry {
  std::string smiles;
  std::string name;
};

inline std::vector<CorpusEntry> load_corpus() {
  std::ifstream in(std::string(MOLBENCH_DATA_DIR) + "/corpus/drugs.smi");
  std::vector<CorpusEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    CorpusEntry e;
    ls >> e.smiles >> e.name;
    out.push_back(e);
  }
  return out;
}

/// Starts argv[0] with stdout and stderr redirected to files (empty = keep).
inline pid_t spawn(const std::vector<std::string>& args, const std::string& out_path = "",
                   const std::string& err_path = "") {
  const pid_t pid = ::fork();
  if (pid == 0) {
    auto redirect = [](const std::string& path, int fd) {
      if (path.empty()) return;
      const int f = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (f >= 0) {
        ::dup2(f, fd);
        ::close(f);
      }
    };
    redirect(out_path, STDOUT_FILENO);
    redirect(err_path, STDERR_FILENO);
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    ::execv(argv[0], argv.data());
    std::_Exit(127);
  }
  return pid;
}

/// Exit code, or 128 + signal number when killed.
inline int wait_exit(pid_t pid) {
  int status = 0;
  if (::waitpid(pid, &status, 0) < 0) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

inline int run_process(const std::vector<std::string>& args, const std::string& out_path = "",
                       const std::string& err_path = "") {
  return wait_exit(spawn(args, out_path, err_path));
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace molbench::testing
