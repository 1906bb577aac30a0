from mfzeta.cli import main

raise SystemExit(main())
