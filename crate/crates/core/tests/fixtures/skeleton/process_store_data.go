func (s *storeObject) ProcessStoreData(
	ctx *Context, req *Request) error {
	err := s.Validate(request)
	if err != nil {
		return err
	}
	var bazaarStores BazaarStores
	var uuidDefectRateMap UUIDMap
	group.Go(func() error {
		docs := s.GetNecessaryDocs()
		// Optional documents behind a feature flag.
		if flipr.GetBool(xpAdditionalDocs) {
			otherDocs := s.GetAdditionalDocs()
			docs = append(docs, otherDocs)
		}
		bazaarStores, err =
			s.LoadStores(ctx, req, docs)
		return err
	})
	group.Go(func() error {
		uuidDefectRateMap, err =
			s.LoadOAData(ctx, s.DocstoreClient, req)
		return err
	})
	err = group.Wait()
	return err
}
