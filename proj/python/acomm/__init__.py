# Copyright 2026 The acomm Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Activation communication between language models.

Thin Python layer over the C++ runtime: the forward engine with residual
grafting, the linear activation map, the analytical cost model, the
coordination-game tasks and the ``acomm`` command line.
"""

from ._acomm import (
    ContextOverflow,
    FormatError,
    InvalidArgument,
    Model,
    ModelConfig,
    __version__,
    activation_similarity,
    bootstrap_ci,
    combine,
    cost,
    decode,
    detokenize,
    forward_from,
    forward_full,
    forward_until,
    gen_countries,
    gen_tipsheets,
    init_random_model,
    load_model,
    loss_gradient,
    mse_loss,
    run_cli,
    score_exact,
    tokenize,
    toy_config,
    train_map,
)

__all__ = [
    "ContextOverflow",
    "FormatError",
    "InvalidArgument",
    "Model",
    "ModelConfig",
    "activation_similarity",
    "bootstrap_ci",
    "combine",
    "cost",
    "decode",
    "detokenize",
    "forward_from",
    "forward_full",
    "forward_until",
    "gen_countries",
    "gen_tipsheets",
    "init_random_model",
    "load_model",
    "loss_gradient",
    "main",
    "mse_loss",
    "run_cli",
    "score_exact",
    "tokenize",
    "toy_config",
    "train_map",
]


def main(argv=None):
    """Console entry point mirroring the C++ ``acomm`` tool."""
    import sys

    code, out, err = run_cli(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
