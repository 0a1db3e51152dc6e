// fs: command-line front end over a feature store root directory.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fstore/error.hpp"
#include "fstore/feature_store.hpp"
#include "fstore/file_util.hpp"

namespace fsys = std::filesystem;
using namespace fstore;

namespace {

// Advisory lock on <root>/.lock, held for the lifetime of the command.
class RootLock {
 public:
  RootLock(const fsys::path& root, bool exclusive) {
    fd_ = ::open((root / ".lock").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) raise(ErrorKind::StoreIoError, "cannot open lock file under " + root.string());
    if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
      ::close(fd_);
      raise(ErrorKind::StoreIoError, "cannot lock " + root.string());
    }
  }
  ~RootLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  RootLock(const RootLock&) = delete;
  RootLock& operator=(const RootLock&) = delete;

 private:
  int fd_ = -1;
};

Json read_json(const std::string& path) {
  std::string text = read_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) raise(ErrorKind::InvalidArgument, path + " is not valid JSON");
  return j;
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

Scalar parse_id_value(const std::string& text) {
  std::int64_t n = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec == std::errc{} && ptr == text.data() + text.size() && !text.empty()) return n;
  return text;
}

NamedValues parse_ids(const std::string& text) {
  NamedValues ids;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t comma = text.find(',', pos);
    std::string pair = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    size_t eq = pair.find('=');
    if (eq == std::string::npos || eq == 0) raise(ErrorKind::InvalidArgument, "--ids expects k=v[,k=v], got '" + text + "'");
    ids.emplace_back(pair.substr(0, eq), parse_id_value(pair.substr(eq + 1)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return ids;
}

Json intervals_json(const IntervalSet& set) {
  Json arr = Json::array();
  for (const auto& w : set.intervals()) arr.push_back(window_to_json(w));
  return arr;
}

Json transitions_json(const std::vector<JobTransition>& transitions) {
  Json arr = Json::array();
  for (const auto& t : transitions) {
    arr.push_back(Json{{"job_id", t.job_id},
                       {"from", t.from ? Json(std::string(to_string(*t.from))) : Json(nullptr)},
                       {"to", to_string(t.to)}});
  }
  return arr;
}

Json job_result_json(const JobResult& r) {
  Json j = to_json(r.job);
  if (r.offline) j["offline_merge"] = Json{{"inserted", r.offline->inserted}, {"skipped", r.offline->skipped}};
  if (r.online) {
    j["online_merge"] = Json{{"inserted", r.online->inserted}, {"overridden", r.online->overridden}, {"noop", r.online->noop}};
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature store engine"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string root_arg;
  app.add_option("--root", root_arg, "Feature store root directory")->envname("FS_ROOT");

  // Each command installs its body here; it runs after parsing, under the root lock.
  std::function<void(FeatureStore&, ManualClock&)> action;
  std::optional<Timestamp> clock_now;
  bool mutating = false;

  auto* init = app.add_subcommand("init", "Initialize a feature store root");

  auto* entity = app.add_subcommand("entity", "Entity assets")->require_subcommand(1);
  std::string entity_file;
  entity->add_subcommand("register", "Register an entity from a JSON file")
      ->callback([&] {
        mutating = true;
        action = [&](FeatureStore& fs, ManualClock&) { print(to_json(fs.registry().register_entity(entity_from_json(read_json(entity_file))))); };
      })
      ->add_option("file", entity_file)->required();

  auto* featureset = app.add_subcommand("featureset", "Feature set assets")->require_subcommand(1);
  std::string fs_file;
  featureset->add_subcommand("register", "Register a feature set version from a JSON file")
      ->callback([&] {
        mutating = true;
        action = [&](FeatureStore& fs, ManualClock&) {
          print(to_json(fs.registry().register_feature_set(feature_set_from_json(read_json(fs_file)))));
        };
      })
      ->add_option("file", fs_file)->required();

  std::string name;
  int version = 0;
  std::string patch_file;
  auto* update = featureset->add_subcommand("update", "Change mutable properties of a feature set version");
  update->add_option("name", name)->required();
  update->add_option("version", version)->required();
  update->add_option("patch-file", patch_file)->required();
  update->callback([&] {
    mutating = true;
    action = [&](FeatureStore& fs, ManualClock&) {
      print(to_json(fs.registry().update_feature_set(name, version, FeatureSetPatch::from_json(read_json(patch_file)))));
    };
  });

  auto* list = app.add_subcommand("list", "List assets")->require_subcommand(1);
  std::string prefix;
  auto* list_fs = list->add_subcommand("featuresets", "List feature set versions");
  list_fs->add_option("--prefix", prefix, "Name prefix");
  list_fs->callback([&] {
    action = [&](FeatureStore& fs, ManualClock&) {
      Json arr = Json::array();
      for (const auto& s : fs.registry().list_feature_sets(prefix)) arr.push_back(to_json(s));
      print(arr);
    };
  });
  list->add_subcommand("entities", "List entity versions")->callback([&] {
    action = [&](FeatureStore& fs, ManualClock&) {
      Json arr = Json::array();
      for (const auto& e : fs.registry().list_entities()) arr.push_back(to_json(e));
      print(arr);
    };
  });

  auto* materialize = app.add_subcommand("materialize", "Materialization jobs")->require_subcommand(1);
  Timestamp start = 0, end = 0;
  std::optional<Timestamp> now_opt;
  auto* backfill = materialize->add_subcommand("backfill", "Queue and run a backfill over [start, end)");
  backfill->add_option("name", name)->required();
  backfill->add_option("version", version)->required();
  backfill->add_option("--start", start)->required();
  backfill->add_option("--end", end)->required();
  backfill->add_option("--now", now_opt, "Execution time; defaults to --end");
  backfill->callback([&] {
    mutating = true;
    clock_now = now_opt.value_or(end);
    action = [&](FeatureStore& fs, ManualClock&) {
      std::string id = fs.scheduler().request_backfill({name, version}, {start, end});
      print(job_result_json(fs.scheduler().run_job(id)));
    };
  });

  Timestamp now = 0;
  auto* tick = app.add_subcommand("tick", "Issue scheduled jobs due at --now and run runnable jobs");
  tick->add_option("--now", now)->required();
  tick->callback([&] {
    mutating = true;
    clock_now = now;
    action = [&](FeatureStore& fs, ManualClock&) { print(transitions_json(fs.scheduler().tick(now))); };
  });

  auto* job = app.add_subcommand("job", "Inspect and retry jobs")->require_subcommand(1);
  std::string job_id;
  job->add_subcommand("status", "Show one job")
      ->callback([&] { action = [&](FeatureStore& fs, ManualClock&) { print(to_json(fs.scheduler().job_status(job_id))); }; })
      ->add_option("job_id", job_id)->required();
  auto* retry = job->add_subcommand("retry", "Retry a failed job with its staged records");
  retry->add_option("job_id", job_id)->required();
  retry->add_option("--now", now_opt, "Execution time; defaults to the time the job last ran");
  retry->callback([&] {
    mutating = true;
    action = [&](FeatureStore& fs, ManualClock& clock) {
      MaterializationJob j = fs.scheduler().job_status(job_id);
      Timestamp at = now_opt ? *now_opt : j.staged_at ? *j.staged_at : j.finished_at.value_or(j.created_at);
      clock.set(at);
      print(job_result_json(fs.scheduler().retry(job_id, at)));
    };
  });
  job->add_subcommand("cancel", "Cancel a queued or failed job")
      ->callback([&] {
        mutating = true;
        action = [&](FeatureStore& fs, ManualClock&) {
          fs.scheduler().cancel(job_id);
          print(to_json(fs.scheduler().job_status(job_id)));
        };
      })
      ->add_option("job_id", job_id)->required();
  job->add_subcommand("list", "List all jobs")->callback([&] {
    action = [&](FeatureStore& fs, ManualClock&) {
      Json arr = Json::array();
      for (const auto& j : fs.scheduler().jobs()) arr.push_back(to_json(j));
      print(arr);
    };
  });

  auto* datastate = app.add_subcommand("datastate", "Materialized event-time intervals of a feature set");
  datastate->add_option("name", name)->required();
  datastate->add_option("version", version)->required();
  datastate->callback([&] {
    action = [&](FeatureStore& fs, ManualClock&) {
      fs.registry().get_feature_set(name, version);
      print(Json{{"feature_set", to_string(FeatureSetRef{name, version})},
                 {"intervals", intervals_json(fs.scheduler().data_state({name, version}))}});
    };
  });

  auto* get = app.add_subcommand("get", "Retrieve features")->require_subcommand(1);
  std::vector<std::string> feature_args;
  std::string spine_file, out_file, ids_arg;
  std::optional<Timestamp> as_of;
  bool unmaterialized = false;
  auto* get_offline = get->add_subcommand("offline", "Point-in-time join of a spine against feature sets");
  get_offline->add_option("--spine", spine_file)->required();
  get_offline->add_option("--features", feature_args, "name:version:f1,f2 (repeatable)")->required();
  get_offline->add_option("--as-of", as_of, "Ignore records created after this time");
  get_offline->add_flag("--unmaterialized", unmaterialized, "Calculate features from source instead");
  get_offline->add_option("--out", out_file)->required();
  get_offline->callback([&] {
    action = [&](FeatureStore& fs, ManualClock&) {
      std::vector<FeatureRequest> requests;
      for (const auto& f : feature_args) requests.push_back(parse_feature_request(f));
      ObservationSpine spine = ObservationSpine::from_jsonl(read_file(spine_file), spine_file);
      if (unmaterialized && as_of) raise(ErrorKind::InvalidArgument, "--as-of does not apply to --unmaterialized");
      RetrievalResult result = unmaterialized ? fs.retriever().get_offline_features_unmaterialized(spine, requests)
                                              : fs.retriever().get_offline_features(spine, requests, as_of);
      atomic_write_file(out_file, result.to_jsonl());
      Json counts = Json::object();
      for (CellStatus s : {CellStatus::Value, CellStatus::NoData, CellStatus::NotMaterialized}) {
        size_t n = 0;
        for (const auto& row : result.cells) n += std::count_if(row.begin(), row.end(), [&](const Cell& c) { return c.status == s; });
        counts[std::string(to_string(s))] = n;
      }
      print(Json{{"rows", result.spine.rows.size()}, {"out", out_file}, {"cells", counts}});
    };
  });
  auto* get_online = get->add_subcommand("online", "Latest feature values for one id combination");
  get_online->add_option("--features", feature_args, "name:version:f1,f2 (repeatable)")->required();
  get_online->add_option("--ids", ids_arg, "k=v[,k=v]")->required();
  get_online->add_option("--now", now)->required();
  get_online->callback([&] {
    action = [&](FeatureStore& fs, ManualClock&) {
      std::vector<FeatureRequest> requests;
      for (const auto& f : feature_args) requests.push_back(parse_feature_request(f));
      print(to_json(fs.retriever().get_online_features(requests, parse_ids(ids_arg), now)));
    };
  });

  std::string direction;
  auto* bootstrap = app.add_subcommand("bootstrap", "Fill one store from the other");
  bootstrap->add_option("name", name)->required();
  bootstrap->add_option("version", version)->required();
  bootstrap->add_option("--direction", direction)->required()->check(CLI::IsMember({"offline-to-online", "online-to-offline"}));
  bootstrap->add_option("--now", now)->required();
  bootstrap->callback([&] {
    mutating = true;
    clock_now = now;
    action = [&](FeatureStore& fs, ManualClock&) {
      BootstrapDirection d = bootstrap_direction_from_string(direction);
      BootstrapReport r = fs.scheduler().bootstrap({name, version}, d);
      print(Json{{"direction", to_string(d)}, {"records_read", r.records_read}, {"records_applied", r.records_applied}});
    };
  });

  auto* check = app.add_subcommand("check", "Consistency checks")->require_subcommand(1);
  auto* consistency = check->add_subcommand("consistency", "Compare the online store with the offline latest records");
  consistency->add_option("name", name)->required();
  consistency->add_option("version", version)->required();
  consistency->add_option("--now", now)->required();
  consistency->callback([&] {
    action = [&](FeatureStore& fs, ManualClock&) { print(fs.check_consistency({name, version}, now).to_json()); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (root_arg.empty()) raise(ErrorKind::InvalidArgument, "no store root: pass --root or set FS_ROOT");
    fsys::path root(root_arg);
    if (init->parsed()) {
      FeatureStore::init(root);
      print(Json{{"root", fsys::absolute(root).string()}});
      return 0;
    }
    if (!FeatureStore::is_root(root)) raise(ErrorKind::NotFound, root.string() + " is not an initialized feature store");
    RootLock lock(root, mutating);
    ManualClock clock(clock_now.value_or(0));
    FeatureStore store(root, clock);
    action(store, clock);
    return 0;
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
