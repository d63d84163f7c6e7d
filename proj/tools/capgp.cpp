#include <pthread.h>
#include <signal.h>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "capgp/cli.hpp"
#include "capgp/service/auth_service.hpp"
#include "capgp/service/config.hpp"
#include "capgp/service/http.hpp"

namespace {

using namespace capgp;

int run_serve(const std::string& config_path) {
  const auto cfg = service::load_config(config_path);

  // SIGINT/SIGTERM are taken by a watcher thread via sigwait; block them
  // before any other thread starts so they inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::AuthService auth(cfg);
  service::HttpFrontend http(auth);
  if (!http.bind(cfg.bind_address, cfg.port)) {
    std::cerr << "error: cannot bind " << cfg.bind_address << ":" << cfg.port << "\n";
    return cli::kRuntime;
  }
  std::cout << "listening on " << cfg.bind_address << " port " << http.port() << std::endl;

  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    http.stop();
  });
  const bool clean = http.serve();
  // wake the watcher if the server ended on its own
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  std::cout << "stopped; " << auth.user_count() << " users in " << cfg.store_path << std::endl;
  return clean ? cli::kOk : cli::kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capgp: CAPTCHA-augmented graphical passwords"};
  app.require_subcommand(1);

  cli::SpaceOptions space;
  auto* sp = app.add_subcommand("space", "password-space size per entered length L");
  sp->add_option("--n", space.grid, "images shown per login");
  sp->add_option("--m", space.string_len, "characters per CAPTCHA string");
  sp->add_option("--l-min", space.l_min, "smallest entered length");
  sp->add_option("--l-max", space.l_max, "largest entered length");
  sp->add_option("--k-min", space.k_min, "minimum number of pass-images");
  std::string space_format = "text";
  sp->add_option("--format", space_format)->check(CLI::IsMember({"text", "json"}));

  cli::AttackOptions attack;
  auto* at = app.add_subcommand("attack", "Monte Carlo intersection attack by an observing adversary");
  at->add_option("--preset", attack.preset, "analytic (N=100) or prototype (N=50)")
      ->check(CLI::IsMember({"analytic", "prototype", "paper-iv-a", "paper-v"}));
  at->add_option("--n", attack.grid, "override grid size");
  at->add_option("--m", attack.string_len, "override string length");
  at->add_option("--k", attack.pass_images, "override number of pass-images");
  at->add_option("--positions", attack.positions, "pass-positions per image");
  at->add_option("--solver", attack.solver, "oracle or none")->check(CLI::IsMember({"oracle", "none"}));
  at->add_option("--solver-budget", attack.solver_budget, "max CAPTCHAs the attacker may solve");
  at->add_flag("--unknown-segmentation", attack.unknown_segmentation, "attacker does not see block boundaries");
  at->add_option("--trials", attack.trials, "independent victims");
  at->add_option("--max-sessions", attack.max_sessions, "observed logins per victim");
  at->add_option("--trajectory", attack.trajectory_sessions, "sessions always observed for the mean trajectory");
  at->add_option("--seed", attack.seed, "seed (default: from entropy, printed)");
  std::string attack_format = "text";
  at->add_option("--format", attack_format)->check(CLI::IsMember({"text", "json"}));

  cli::CaptchaOptions cap;
  auto* cp = app.add_subcommand("captcha", "render a CAPTCHA string to PNG");
  cp->add_option("text", cap.text, "lowercase string")->required();
  cp->add_option("--seed", cap.seed, "seed (default: from entropy, printed)");
  cp->add_option("-o,--output", cap.output, "PNG path");
  cp->add_option("--glyph-height", cap.render.glyph_height);
  cp->add_option("--rotation", cap.render.rotation_jitter, "max rotation in degrees");
  cp->add_option("--wave-amplitude", cap.render.wave_amplitude);
  cp->add_option("--wave-period", cap.render.wave_period);
  cp->add_option("--overlap", cap.render.overlap);
  cp->add_option("--noise", cap.render.noise_density);
  cp->add_option("--fit-width", cap.render.fit_width);
  cp->add_flag("--identity", cap.identity, "no distortion and no noise");

  std::string config_path;
  auto* sv = app.add_subcommand("serve", "run the authentication service");
  sv->add_option("--config", config_path, "key = value config file")->required();

  std::optional<std::uint64_t> demo_seed;
  auto* dm = app.add_subcommand("demo", "scripted walkthrough of one login and the basic-mode break");
  dm->add_option("--seed", demo_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kOk : cli::kUsage;
  }

  try {
    if (sp->parsed()) {
      space.json = space_format == "json";
      return cli::cmd_space(space, std::cout);
    }
    if (at->parsed()) {
      attack.json = attack_format == "json";
      return cli::cmd_attack(attack, std::cout);
    }
    if (cp->parsed()) return cli::cmd_captcha(cap, std::cout);
    if (sv->parsed()) return run_serve(config_path);
    if (dm->parsed()) {
      cli::cmd_demo(demo_seed ? *demo_seed : cli::entropy_seed(), std::cout);
      return cli::kOk;
    }
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::InvalidParams ? cli::kUsage : cli::kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kRuntime;
  }
  return cli::kUsage;
}
