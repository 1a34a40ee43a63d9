func Notify(users []User, send func(User) error) error {
	g := new(errgroup.Group)
	var err error
	for _, u := range users {
		u := u
		g.Go(func() error {
			err = send(u)
			return err
		})
	}
	if gerr := g.Wait(); gerr != nil {
		return gerr
	}
	return err
}
