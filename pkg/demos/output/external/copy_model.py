import json, shutil, sys
from pathlib import Path
inp, out, gt = map(Path, sys.argv[1:4])
for item in json.loads((inp / 'batch.json').read_text())['images']:
    shutil.copyfile(gt / item['file'], out / item['file'])
