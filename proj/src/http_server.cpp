#include <httplib.h>

#include "colorser/annotation_service.hpp"
#include "colorser/error.hpp"
#include "colorser/text_io.hpp"

namespace colorser::annotation {
namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

std::string audio_content_type(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".wav") return "audio/wav";
  if (ext == ".mp3") return "audio/mpeg";
  if (ext == ".flac") return "audio/flac";
  if (ext == ".ogg") return "audio/ogg";
  return "application/octet-stream";
}

// Request body -> record; submitted_at defaults to the server clock.
AnnotationRecord parse_submission(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("annotation is not a JSON object");
  if (!j.contains("submitted_at")) j["submitted_at"] = text::format_timestamp(text::now_utc());
  return parse_annotation_line(j.dump());
}

int status_code(SubmitStatus status) {
  switch (status) {
    case SubmitStatus::accepted:
      return 201;
    case SubmitStatus::duplicate:
      return 409;
    case SubmitStatus::invalid_option:
    case SubmitStatus::unknown_utterance:
      return 422;
    case SubmitStatus::malformed:
      return 400;
  }
  return 500;
}

}  // namespace

struct Server::Impl {
  AnnotationStore& store;
  ServerOptions options;
  httplib::Server http;
  bool bound = false;

  Impl(AnnotationStore& s, ServerOptions o) : store(s), options(std::move(o)) { routes(); }

  void routes() {
    http.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string annotator = req.get_param_value("annotator_id");
      if (annotator.empty()) return send_error(res, 400, "annotator_id is required");
      const auto task = store.next_task(annotator);
      if (!task) {
        res.status = 204;
        return;
      }
      send_json(res, 200, to_json(*task));
    });

    http.Get(R"(/api/audio/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const UtteranceMeta* meta = store.find_utterance(req.matches[1]);
      if (!meta) return send_error(res, 404, "unknown utterance");
      std::filesystem::path path = meta->audio_path;
      if (path.is_relative()) path = options.audio_root / path;
      try {
        res.set_content(text::read_file(path), audio_content_type(path));
        res.status = 200;
      } catch (const IoError&) {
        send_error(res, 404, "audio not found");
      }
    });

    http.Post("/api/annotations", [this](const httplib::Request& req, httplib::Response& res) {
      AnnotationRecord record;
      try {
        record = parse_submission(req.body);
      } catch (const ValidationError& e) {
        return send_error(res, 400, e.what());
      }
      try {
        const SubmitResult result = store.submit(std::move(record));
        if (result.status == SubmitStatus::accepted) {
          res.status = 201;
          res.set_content(serialize_annotation(result.record), "application/json");
        } else {
          send_error(res, status_code(result.status), result.message);
        }
      } catch (const IoError& e) {
        send_error(res, 500, e.what());
      }
    });

    http.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
      res.status = 200;
      res.set_content(store.export_jsonl(), "application/x-ndjson");
    });

    http.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, to_json(store.progress()));
    });

    if (!options.ui_dir.empty() && std::filesystem::is_directory(options.ui_dir)) {
      http.set_mount_point("/", options.ui_dir.string());
    }
  }
};

Server::Server(AnnotationStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {}

Server::~Server() = default;

int Server::bind() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->http.bind_to_any_port(impl_->options.host);
    if (port < 0) throw IoError("cannot bind " + impl_->options.host);
  } else if (!impl_->http.bind_to_port(impl_->options.host, port)) {
    throw IoError("cannot bind " + impl_->options.host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return port;
}

void Server::run() {
  if (!impl_->bound) bind();
  impl_->http.listen_after_bind();
}

void Server::stop() { impl_->http.stop(); }

}  // namespace colorser::annotation
