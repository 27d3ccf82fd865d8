"""featurize: photo directory -> feature file for the authorship pipeline.

Images are resized (shorter side to 299), center-cropped to 299x299 and
scaled to [-1, 1] before the frozen Inception-ResNet-v2 convolutional
base; its 1536-wide global average pool is what gets written.
"""

from __future__ import annotations

import argparse
import sys

from .extract import (
    FeatureExtractor,
    FeaturizeJob,
    load_id_map,
    photo_ids_from_reviews,
    run_job,
    write_errors_file,
)


def build_parser():
    parser = argparse.ArgumentParser(prog="featurize", description=__doc__)
    parser.add_argument("--images", required=True, help="directory of photo files")
    parser.add_argument("--map", required=True,
                        help="TSV of filename<TAB>photo_id rows")
    parser.add_argument("--out", required=True, help="output feature file")
    parser.add_argument("--format", choices=("elvf", "jsonl"), default="elvf")
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--weights", default="imagenet",
                        help="'imagenet', 'random' (seeded, for offline tests), "
                             "or a weights file path")
    parser.add_argument("--seed", type=int, default=0,
                        help="initialization seed when --weights random")
    parser.add_argument("--reviews", default=None,
                        help="optional reviews export; missing photo ids are reported")
    parser.add_argument("--errors", default=None,
                        help="error listing path (default: <out>.errors.txt)")
    return parser


def build_extractor(weights: str, seed: int) -> FeatureExtractor:
    return FeatureExtractor.build(weights=weights, seed=seed)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        id_map = load_id_map(args.map)
        expected = photo_ids_from_reviews(args.reviews) if args.reviews else None
        extractor = build_extractor(args.weights, args.seed)
        job = FeaturizeJob(
            image_dir=args.images,
            id_map=id_map,
            out_path=args.out,
            batch_size=args.batch,
            out_format=args.format,
            expected_photo_ids=expected,
        )
        report = run_job(extractor, job)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    errors_path = args.errors or f"{args.out}.errors.txt"
    write_errors_file(report, errors_path)
    print(f"extracted {report.extracted} vectors, {len(report.errors)} problems "
          f"(see {errors_path})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
