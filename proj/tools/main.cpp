// Copyright 2026 The GestureLM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "gesturelm/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"GestureLM: gesture tokenization, gesture/text alignment and marker infilling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("gesturelm ") + GESTURELM_VERSION);
  gesturelm::cli::add_synth_command(app);
  gesturelm::cli::add_tokenizer_commands(app);
  gesturelm::cli::add_lm_commands(app);
  gesturelm::cli::add_align_commands(app);
  gesturelm::cli::add_finetune_command(app);
  gesturelm::cli::add_eval_command(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const gesturelm::Error& e) {
    std::cerr << "gesturelm: error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "gesturelm: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gesturelm: internal error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
