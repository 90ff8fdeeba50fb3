# Copyright 2026 The hpfens Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates tests/data/pool4x4x1024.onnx.

A 1x1 convolution (3 -> 1024 channels) followed by ReLU and a 32x32 max-pool,
so a 128x128x3 input flattens to 4*4*1024 = 16384 features.
Requires torch and onnx.
"""
import sys

import torch
import torch.nn as nn


class PoolNet(nn.Module):
    def __init__(self):
        super().__init__()
        torch.manual_seed(0)
        self.conv = nn.Conv2d(3, 1024, 1)
        self.pool = nn.MaxPool2d(32)

    def forward(self, x):
        return self.pool(torch.relu(self.conv(x)))


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "tests/data/pool4x4x1024.onnx"
    torch.onnx.export(PoolNet().eval(), torch.zeros(1, 3, 128, 128), out,
                      input_names=["input"], output_names=["features"],
                      dynamic_axes={"input": {0: "n"}, "features": {0: "n"}},
                      opset_version=11, dynamo=False)
