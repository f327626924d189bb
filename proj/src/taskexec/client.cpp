#include "gridfs/taskexec/client.hpp"

#include <exception>
#include <thread>

#include "gridfs/error.hpp"
#include "gridfs/ftsm/engine.hpp"
#include "gridfs/taskexec/pi.hpp"
#include "gridfs/wire/tags.hpp"

namespace fs = std::filesystem;

namespace gridfs::taskexec {

namespace tt = wire::task_tag;
using wire::FieldMap;
using wire::FrameType;

TaskClient::TaskClient(net::Endpoint endpoint, net::Credentials creds, net::ClientOptions options,
                       dfsm::RetryPolicy retry)
    : endpoint_(std::move(endpoint)),
      creds_(std::move(creds)),
      options_(std::move(options)),
      retry_(retry) {
  session_.emplace(net::open_session(endpoint_, wire::Mode::Task, creds_, options_));
}

void TaskClient::reconnect() {
  session_.reset();
  session_.emplace(net::open_session(endpoint_, wire::Mode::Task, creds_, options_));
  ++reconnects_;
}

FieldMap TaskClient::status_request(const std::string& set_id, std::uint64_t action) {
  FieldMap m;
  m.set_str(tt::kSetId, set_id).set_u64(tt::kAction, action);
  session_->channel.send(FrameType::TaskStatus, m);
  return session_->channel.recv_fields(FrameType::TaskStatus);
}

SetHandle TaskClient::submit(std::vector<TaskSpec> tasks) {
  validate_task_set(tasks);
  std::vector<FieldMap> deps;
  std::vector<const Dependency*> staged;
  for (const auto& t : tasks) {
    for (const auto& d : t.dependencies) {
      std::error_code ec;
      auto size = fs::file_size(d.source, ec);
      if (ec || !fs::is_regular_file(d.source)) {
        throw Error(Errc::StagingFailed, "dependency not readable: " + d.source);
      }
      FieldMap m;
      try {
        m.set_str(1, d.name).set(2, ByteView(ftsm::md5_region(d.source, 0, size)));
      } catch (const Error& e) {
        throw Error(Errc::StagingFailed, "dependency not readable: " + d.source);
      }
      deps.push_back(std::move(m));
      staged.push_back(&d);
    }
  }

  FieldMap submit;
  submit.set(tt::kTasks, encode_tasks(tasks)).set(tt::kDependencies, wire::encode_list(deps));
  session_->channel.send(FrameType::TaskSubmit, submit);
  FieldMap reply = session_->channel.recv_fields(FrameType::TaskStatus);
  SetHandle h{reply.require_str(tt::kSetId), std::move(tasks)};

  try {
    ftsm::FtsmClient xfer(*session_, endpoint_, options_);
    for (const auto* d : staged) {
      ftsm::TransferOptions o;
      o.set_id = h.set_id;
      xfer.push(d->source, d->name, o);
    }
  } catch (const Error& e) {
    try {
      status_request(h.set_id, task_action::kAbort);
    } catch (const Error&) {
      // Connection gone: the server drops staging sets of closed sessions.
    }
    throw Error(Errc::StagingFailed, e.what());
  }
  status_request(h.set_id, task_action::kStart);
  return h;
}

SetSnapshot TaskClient::status(const SetHandle& handle) {
  FieldMap m = status_request(handle.set_id, task_action::kPoll);
  SetSnapshot s;
  s.state = static_cast<SetState>(m.require_u64(tt::kState));
  if (const auto* st = m.find(tt::kStatuses)) {
    for (auto b : *st) s.statuses.push_back(static_cast<TaskStatus>(b));
  }
  return s;
}

std::vector<TaskResult> TaskClient::collect(const SetHandle& handle, const fs::path& out_dir,
                                            std::chrono::milliseconds poll) {
  auto delay = retry_.initial_delay;
  for (int attempt = 0;; ++attempt) {
    try {
      while (status(handle).state != SetState::Done) std::this_thread::sleep_for(poll);
      FieldMap req;
      req.set_str(tt::kSetId, handle.set_id);
      session_->channel.send(FrameType::TaskResult, req);
      FieldMap reply = session_->channel.recv_fields(FrameType::TaskResult);
      auto results = decode_results(reply.require(tt::kResults));
      if (results.size() != handle.tasks.size()) {
        throw Error(Errc::ProtocolError, "result array size differs from the task count");
      }
      if (!out_dir.empty()) {
        ftsm::FtsmClient xfer(*session_, endpoint_, options_);
        for (const auto& r : results) {
          if (r.status != TaskStatus::Ok) continue;
          for (const auto& name : r.outputs) {
            ftsm::TransferOptions o;
            o.set_id = handle.set_id;
            xfer.pull(name, out_dir / name, o);
          }
        }
      }
      status_request(handle.set_id, task_action::kRelease);
      return results;
    } catch (const Error& e) {
      if (e.code() != Errc::ConnectionLost || attempt >= retry_.retries) throw;
      std::this_thread::sleep_for(delay);
      delay *= 2;
      try {
        reconnect();
      } catch (const Error&) {
        if (attempt + 1 >= retry_.retries) throw;
      }
    }
  }
}

std::vector<TaskResult> run_tasks(const net::Endpoint& ep, const net::Credentials& creds,
                                  const net::ClientOptions& opts, std::vector<TaskSpec> tasks,
                                  const fs::path& out_dir) {
  TaskClient client(ep, creds, opts);
  auto h = client.submit(std::move(tasks));
  return client.collect(h, out_dir);
}

std::string distributed_pi(const std::vector<net::Endpoint>& nodes, const net::Credentials& creds,
                           const net::ClientOptions& opts, std::uint64_t digits) {
  if (nodes.empty()) throw Error(Errc::InvalidArgument, "no nodes");
  auto ranges = split_spmd(digits, nodes.size());
  std::vector<std::string> pieces(ranges.size());
  std::vector<std::exception_ptr> errors(ranges.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        FieldMap p;
        p.set_u64(pi_param::kStart, ranges[i].first).set_u64(pi_param::kCount, ranges[i].second);
        auto r = run_tasks(nodes[i], creds, opts, {TaskSpec::builtin("pi_hex_digits", p)});
        if (r.at(0).status != TaskStatus::Ok) {
          throw Error(Errc::WorkerFailed, nodes[i].str() + ": " + r[0].message);
        }
        pieces[i] = r[0].result.require_str(pi_param::kDigits);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::string out;
  for (auto& p : pieces) out += p;
  return out;
}

}  // namespace gridfs::taskexec
