"""Export torchvision's ImageNet ResNet50, minus pooling and classifier, to ONNX.

    python -m deepfeat.export_backbone resnet50_conv.onnx

The exported graph maps ``(N, 3, 224, 224)`` float32 to the final
convolutional activation ``(N, 2048, 7, 7)``.  Downloading the pretrained
weights needs network access once; ``--random-weights`` skips it (useful
only for checking the plumbing).
"""

import argparse
import sys


def build_trunk(pretrained=True):
    import torch
    from torchvision.models import ResNet50_Weights, resnet50

    net = resnet50(weights=ResNet50_Weights.IMAGENET1K_V1 if pretrained else None)
    # drop avgpool and fc, keep conv1 .. layer4
    trunk = torch.nn.Sequential(*list(net.children())[:-2])
    return trunk.eval()


def export(path, pretrained=True, opset=17):
    import torch

    trunk = build_trunk(pretrained)
    dummy = torch.zeros(1, 3, 224, 224)
    torch.onnx.export(
        trunk, dummy, str(path),
        input_names=["input"], output_names=["features"],
        dynamic_axes={"input": {0: "batch"}, "features": {0: "batch"}},
        opset_version=opset, dynamo=False,
    )


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("output", help="destination .onnx file")
    parser.add_argument("--random-weights", action="store_true")
    parser.add_argument("--opset", type=int, default=17)
    args = parser.parse_args(argv)
    export(args.output, pretrained=not args.random_weights, opset=args.opset)
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
