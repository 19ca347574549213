#!/usr/bin/env node
/** extract-tokens --images DIR --out data.tokemb --variant NAME --batch 64 */

import { parseArgs } from 'node:util';

import { DEFAULT_VARIANT } from './encoders.js';
import { extractDirectory } from './extract.js';

const USAGE = `usage: extract-tokens --images DIR --out PATH [--variant NAME] [--batch N]

Extract per-image spatial token embeddings into the .tokemb binary format.

options:
  --images DIR    directory of images (PNG; scanned recursively)
  --out PATH      output .tokemb path
  --variant NAME  encoder variant (default ${DEFAULT_VARIANT}; patch-stats
                  needs no pretrained weights)
  --batch N       images per encoder batch (default 64)
`;

async function main(): Promise<number> {
  let values;
  try {
    ({ values } = parseArgs({
      options: {
        images: { type: 'string' },
        out: { type: 'string' },
        variant: { type: 'string', default: DEFAULT_VARIANT },
        batch: { type: 'string', default: '64' },
        help: { type: 'boolean', default: false },
      },
    }));
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    console.error(USAGE);
    return 2;
  }
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  if (!values.images || !values.out) {
    console.error('--images and --out are required');
    console.error(USAGE);
    return 2;
  }
  const batch = Number.parseInt(values.batch as string, 10);
  if (!Number.isFinite(batch) || batch < 1) {
    console.error(`--batch must be a positive integer, got ${values.batch}`);
    return 2;
  }
  try {
    const result = await extractDirectory({
      imagesDir: values.images as string,
      outPath: values.out as string,
      variant: values.variant as string,
      batchSize: batch,
    });
    console.log(
      `wrote ${result.nImages} images ` +
      `(L=${result.tokensPerImage}, d=${result.dim}) to ${result.outPath}`,
    );
    if (result.manifestPath) {
      console.log(`skipped ${result.skipped.length} file(s); see ${result.manifestPath}`);
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
